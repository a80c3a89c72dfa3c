package com.shop.inventory;

import com.shop.inventory.model.Item;

public class InventoryApp {
    public static void main(String[] args) {
        Inventory inventory = new Inventory();
        inventory.register(new Item("A-100", "Widget", 250), 3);
        inventory.register(new Item("B-200", "Gadget", 1200), 40);
        /* print a one-line status */
        System.out.println("A-100 low: " + inventory.lowOnStock("A-100"));
    }
}
