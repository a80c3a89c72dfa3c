package com.shop.inventory.model;

public class Item {
    private final String sku;
    private final String title;
    private int priceCents;

    public Item(String sku, String title, int priceCents) {
        this.sku = sku;
        this.title = title;
        this.priceCents = priceCents;
    }

    public String getSku() {
        return sku;
    }

    public String getTitle() {
        return title;
    }

    public int getPriceCents() {
        return priceCents;
    }
}
